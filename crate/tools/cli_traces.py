"""Freezes the CLI run fixtures.

Usage: python3 tools/cli_traces.py <xoscgen binary>

Generates the left-turn and signalled T-junction documents with the bundled
scripted backend, records route-following ego traces for both, and derives a
red-light trace from the T-junction one by cutting out the wait at the stop
line so the ego enters the junction while its signal is still red.
"""

import json
import pathlib
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "crates" / "cli" / "tests" / "fixtures"
CASES = json.loads((ROOT / "crates/core/data/demo/cases.json").read_text())


def text_of(case_id):
    return next(c["text"] for c in CASES if c["id"] == case_id)


def generate(binary, case_id, seed, work):
    out = work / case_id
    subprocess.run(
        [binary, "generate", "--text", text_of(case_id), "--backend", "scripted",
         "--seed", str(seed), "--out", str(out)],
        check=True, stdout=subprocess.DEVNULL)
    rec = out / "rec.json"
    subprocess.run([binary, "run", str(out / "scenario.xosc"), "--record", str(rec)],
                   check=True, stdout=subprocess.DEVNULL)
    return (out / "scenario.xosc").read_bytes(), json.loads(rec.read_text())


def rounded(trace):
    return [{k: round(v, 4) for k, v in s.items()} for s in trace]


def run_red(trace):
    stopped = [s for s in trace if s["speed"] == 0.0 and s["t"] > 1.0]
    start, end = stopped[0]["t"], stopped[-1]["t"]
    cut = end - start
    head = [s for s in trace if s["t"] <= start]
    tail = [dict(s, t=s["t"] - cut) for s in trace if s["t"] > end]
    return head + tail


def main():
    binary = sys.argv[1]
    with tempfile.TemporaryDirectory() as tmp:
        work = pathlib.Path(tmp)
        doc, trace = generate(binary, "left_turn", 11, work)
        (FIXTURES / "left_turn.xosc").write_bytes(doc)
        (FIXTURES / "left_turn_clean.trace.json").write_text(json.dumps(rounded(trace), indent=1) + "\n")
        doc, trace = generate(binary, "t_junction_signal", 0, work)
        (FIXTURES / "t_junction_signal.xosc").write_bytes(doc)
        (FIXTURES / "t_junction_red_light.trace.json").write_text(json.dumps(rounded(run_red(trace)), indent=1) + "\n")


if __name__ == "__main__":
    main()
