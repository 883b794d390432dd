"""Compare three distances on random pointed models and report their topologies.

For a random sample this prints, per pair, the bisimulation distance d_B,
the Goranko-style distance and a b-weight bracket, then the Stone topology
of the sample under a random finite descriptor together with its
separation properties.

    python scripts/distances_and_topology.py --models 12 --seed 7
"""
import argparse
import itertools
import random
from dataclasses import dataclass
from fractions import Fraction

from modalmetric import bisim, metrics, topology
from modalmetric.formula import Signature
from modalmetric.generate import random_formula, random_model, random_weights


@dataclass(frozen=True)
class Config:
    models: int = 10
    formulas: int = 4
    seed: int = 0
    tol: Fraction = Fraction(1, 64)
    pairs_shown: int = 8


def run(cfg: Config) -> None:
    rng = random.Random(cfg.seed)
    sig = Signature(("p", "q"), ("a",))
    sample = [random_model(rng, sig) for _ in range(cfg.models)]

    D, w = metrics.bisim_descriptor_b(sig, sample)
    print("pair  d_B  d_g  b-bracket")
    for i, j in itertools.islice(itertools.combinations(range(len(sample)), 2), cfg.pairs_shown):
        x, y = sample[i], sample[j]
        iv = metrics.distance(x, y, D, w, cfg.tol)
        print(f"{i}-{j}  {metrics.bisim_metric_dB(x, y)}  {metrics.goranko_metric_dg(x, y)}  [{iv.lower}, {iv.upper}]")

    entries = bisim.dedupe_formulas([random_formula(rng, sig, 2, 4) for _ in range(cfg.formulas)], sig)
    Df = metrics.Descriptor.finite(entries, sig, check=False)
    wf = metrics.WeightFunction.finite(random_weights(rng, len(entries)))
    space = metrics.quotient(sample, Df)
    T = topology.stone_topology(space, Df)
    same = topology.metric_topology(space, metrics.distance_matrix(space, Df, wf)).opens == T.opens
    print()
    print("descriptor:", ", ".join(f"{f} @ {wf.weight(k)}" for k, f in enumerate(entries)))
    print(f"classes: {len(space)}  opens: {len(T.opens)}  clopens: {len(topology.clopen_sets(T))}")
    print(f"metric topology equals Stone topology: {same}")
    print(f"hausdorff: {topology.is_hausdorff(T)}  totally disconnected: {topology.is_totally_disconnected(T)}")
    undefinable = [r for r in topology.definable_check(T, space, Df) if r.formula is None]
    print(f"undefinable clopens: {len(undefinable)}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--models", type=int, default=Config.models)
    ap.add_argument("--formulas", type=int, default=Config.formulas)
    ap.add_argument("--seed", type=int, default=Config.seed)
    ap.add_argument("--tol", type=Fraction, default=Config.tol)
    args = ap.parse_args()
    run(Config(models=args.models, formulas=args.formulas, seed=args.seed, tol=args.tol))


if __name__ == "__main__":
    main()
