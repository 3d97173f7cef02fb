"""Smoke test for the `elan` extension module.

Build first, e.g. `pip install maturin && maturin develop -m crates/py/Cargo.toml`.
"""

import json
import pathlib

import elan

CORPUS = pathlib.Path(__file__).resolve().parent.parent / "corpus"

SRC = """int main(int a, int b) {
    if (a || b) {
        t = 1;
    }
}
"""


def main():
    a = elan.Analysis(SRC, "t.mc")
    assert len(a) == 4, a
    assert a.functions == ["main"]
    assert a.likelihood_at(3) == 0.75
    assert a.batch_likelihood() == [a.likelihood(v) for v in range(len(a))]
    assert a.to_json()["vertices"][0]["kind"] == "entry"
    assert a.to_dot().startswith("digraph")

    try:
        a.likelihood(0, start="nowhere")
    except ValueError as e:
        assert "nowhere" in str(e)
    else:
        raise AssertionError("unknown start accepted")

    try:
        elan.Analysis("int main( {", "bad.mc")
    except ValueError:
        pass
    else:
        raise AssertionError("parse error not raised")

    assert abs(elan.dempster_shafer_combine(0.88, 0.40) - 0.83019) < 1e-5
    assert elan.dempster_shafer_combine(0.3, 0.5) == 0.3

    ledger = elan.Analysis.from_file(str(CORPUS / "loop_ledger.mc"))
    ranked = ledger.rank((CORPUS / "warnings" / "loop_ledger.txt").read_text())
    values = [r["likelihood"] for r in ranked if r["likelihood"] != "unmapped"]
    assert values == sorted(values, reverse=True)
    assert ranked[-1]["likelihood"] == "unmapped"

    inputs = (CORPUS / "loop_ledger.inputs.json").read_text()
    prof = ledger.profile(inputs)
    assert prof["run_count"] == 120 and prof["runtime_errors"] == 0
    ev = ledger.evaluate(inputs, model="heuristic")
    assert ev["model"] == "heuristic"
    assert ev["correlation"]["blocks"][-1]["score"] > 0.5

    gen = elan.Analysis(elan.generate_program(7, functions=4, loops=True), "gen.mc")
    assert all(0.0 <= x <= 1.0 for x in gen.batch_likelihood(model="heuristic"))
    json.dumps(gen.to_json())

    print("elan smoke test passed")


if __name__ == "__main__":
    main()
