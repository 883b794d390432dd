"""Continuity moduli of two action models under the b-weight metric.

Computes delta(eps) for an announcement of p and for an ontic toggle of p,
then probes each eps-delta pair on random pointed models (a quarter of the
pairs are bisimilar copies).

    python scripts/continuity_demo.py --pairs 50 --seed 3
"""
import argparse
import random
from dataclasses import dataclass, field
from fractions import Fraction

from modalmetric import dynamics, metrics
from modalmetric.formula import Signature
from modalmetric.generate import bisimilar_copy, random_model
from modalmetric.kripke import successor_closure

F = Fraction


@dataclass(frozen=True)
class Config:
    pairs: int = 40
    seed: int = 0
    # the modulus shrinks doubly exponentially, so keep eps coarse
    eps_grid: tuple[Fraction, ...] = field(default=(F(1, 2), F(1, 4), F(1, 8)))


def announcement(sig):
    return dynamics.make_action_model(
        sig, ["yes", "no"], {a: [("yes", "yes"), ("no", "no")] for a in sig.agents}, pre={"yes": "p", "no": "~p"}
    )


def toggle(sig):
    every = [(s, t) for s in ("on", "off") for t in ("on", "off")]
    return dynamics.make_action_model(
        sig, ["on", "off"], {a: every for a in sig.agents},
        pre={"on": "p", "off": "~p"}, post={"on": "~p", "off": "p"},
    )


def short(q: Fraction) -> str:
    text = str(q)
    if len(text) <= 24:
        return text
    return f"~1e-{len(str(q.denominator // max(q.numerator, 1))) - 1} ({len(str(q.denominator))}-digit denominator)"


def run(cfg: Config) -> None:
    rng = random.Random(cfg.seed)
    sig = Signature(("p",), ("a",))
    pairs = []
    for k in range(cfg.pairs):
        x = random_model(rng, sig)
        pairs.append((x, bisimilar_copy(rng, x) if k % 4 == 0 else random_model(rng, sig)))
    sample = [x for pair in pairs for x in pair]
    maps = {"announce p": announcement(sig), "toggle p": toggle(sig)}
    images = [dynamics.product_update(x, A) for A in maps.values() for x in sample]
    D, w = metrics.bisim_descriptor_b(sig, successor_closure(sample + images))

    print("map  eps  delta  in_scope  violations")
    for name, A in maps.items():
        for eps in cfg.eps_grid:
            delta = dynamics.continuity_modulus(A, D, w, eps)
            report = dynamics.probe_continuity(A, D, w, eps, delta, pairs)
            print(f"{name}  {eps}  {short(delta)}  {report.in_scope}/{report.checked}  {len(report.violations)}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=Config.pairs)
    ap.add_argument("--seed", type=int, default=Config.seed)
    args = ap.parse_args()
    run(Config(pairs=args.pairs, seed=args.seed))


if __name__ == "__main__":
    main()
