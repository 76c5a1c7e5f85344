"""Single-LIF dialect comparison on the shipped 100-step input spike train.

Runs the golden LIF under post-update, pre-leak and delayed-emission
dialects, prints spike counts and fire times, and writes the comparison
report (matrix.csv, summary.json, raster.svg).
"""

import argparse
from pathlib import Path

import numpy as np

from nirc import analysis as A
from nirc.serialize import load
from nirc.streams import load_inputs

ROOT = Path(__file__).resolve().parent.parent
GOLDEN = ROOT / "tests" / "golden"
DIALECTS = ("norse", "snntorch", "rockpool_sinabs", "lava_dl")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--graph", type=Path, default=GOLDEN / "single_lif.nir.json")
    parser.add_argument("--input", type=Path, default=GOLDEN / "single_lif_input.csv")
    parser.add_argument("--out", type=Path, default=Path("single_lif_report"))
    args = parser.parse_args()

    graph = load(args.graph)
    inputs = load_inputs(args.input, graph)
    result = A.compare_dialects(graph, inputs, DIALECTS, "lif1")
    for label, trace in sorted(result.traces.items()):
        times = np.flatnonzero(trace.outputs["lif1"][:, 0])
        print(f"{label:>16}: {len(times):2d} spikes at {times.tolist()}")
    for (a, b), cmp in sorted(result.pairs.items()):
        print(f"{a} vs {b}: best shift {cmp.best_shift}, exact={cmp.exact}")
    files = A.emit_report(result, args.out)
    print("wrote " + ", ".join(str(f) for f in files))


if __name__ == "__main__":
    main()
