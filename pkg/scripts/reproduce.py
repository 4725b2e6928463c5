"""End-to-end synthetic reproduction run.

Generates a seeded smoothed-noise corpus, walks the whole pipeline
(scan -> ctm -> score -> sample), simulates 100 participants whose
judgment probability is logistic in natural randomness, and analyzes
the result.  Expected outcome: all three pairwise correlations positive
and significant, and a Sobel z above 1.96 for the mediating role of the
natural statistics.

Usage: python3 scripts/reproduce.py [WORKDIR] [--participants 100] [--seed 20260810]
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path

from scenestat.analysis import scores_from_csv
from scenestat.experiment import StimulusSet, aggregates_to_csv
from scenestat.grid import save_pgm
from scenestat.simulate import make_corpus, simulate_judgments


def run(args: list[str]) -> None:
    print("$", " ".join(args))
    subprocess.run(args, check=True)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("workdir", nargs="?", type=Path, default=Path("reproduction"))
    parser.add_argument("--participants", type=int, default=100)
    parser.add_argument("--seed", type=int, default=20260810)
    args = parser.parse_args()

    work = args.workdir
    corpus = work / "corpus"
    corpus.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(make_corpus(100, 128, 128, seed=args.seed, radius=3)):
        (corpus / f"img{i:03d}.pgm").write_bytes(save_pgm(img))
    print(f"corpus: 100 images in {corpus}")

    scenestat = [sys.executable, "-m", "scenestat.cli"]
    freq = work / "freq.csv"
    ctm = work / "ctm.csv"
    scores_path = work / "scores.csv"
    set_path = work / "set.json"
    aggs_path = work / "aggregates.csv"

    run(scenestat + ["scan", str(corpus), "-k", "4", "-o", str(freq)])
    run(scenestat + ["ctm", "-k", "2", "--samples", "1000000", "--seed", "1", "-o", str(ctm)])
    run(scenestat + ["score", str(freq), str(ctm), "-o", str(scores_path)])
    run(scenestat + ["sample", str(freq), "-n", "100", "--seed", "42", "-o", str(set_path)])

    scores = scores_from_csv(scores_path.read_text())
    natural = {int(s.pattern_hex, 16): s.natural_randomness for s in scores}
    sset = StimulusSet.from_dict(json.loads(set_path.read_text()))
    aggregates = simulate_judgments(
        sset, natural, n_participants=args.participants, seed=args.seed + 1,
        slope=2.0, participant_sd=0.5,
    )
    aggs_path.write_text(aggregates_to_csv(aggregates, sset.set_id, args.participants))
    print(f"simulated {args.participants} participants -> {aggs_path}")

    run(scenestat + ["analyze", str(scores_path), str(aggs_path), "-o", str(work / "result")])
    report = json.loads((work / "result.report.json").read_text())
    print("\nmediation report:")
    print(json.dumps(report, indent=2, sort_keys=True))
    print(f"\ncorrelations: {work / 'result.correlations.csv'}")
    print((work / "result.correlations.csv").read_text())
    print(f"scatter figure: {work / 'result.svg'}")


if __name__ == "__main__":
    main()
