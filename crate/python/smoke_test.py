"""Smoke test for the qea extension module.

Build first with `cargo build --release -p qea-py`; the script loads
target/release/libqea.so when no installed `qea` module is found.
"""

import importlib.machinery
import importlib.util
import json
import pathlib
import sys


def load():
    try:
        import qea  # noqa: F401

        return qea
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parent.parent
    for profile in ("release", "debug"):
        lib = root / "target" / profile / "libqea.so"
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("qea", str(lib))
            spec = importlib.util.spec_from_file_location("qea", str(lib), loader=loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("qea extension not found; run `cargo build --release -p qea-py`")


def main():
    qea = load()

    assert qea.normalize_term("c0( x0 +0 )", 3) == "c0(x0 + 0)"

    proto = qea.Algebra.prototype([2, 2, 2])
    assert proto.atom_count == 54, proto
    ok, failures = proto.verify()
    assert ok, failures

    s = qea.Algebra.split([2, 2, 2], m=2)
    assert s.atom_count == 58
    assert s.verify()[0]
    verdict = json.loads(s.check_equation("c0(c0(x0)) = c0(x0)"))
    assert verdict["outcome"]["result"] == "holds"
    verdict = json.loads(s.check_equation("c0(x0) = x0"))
    assert verdict["outcome"]["result"] == "fails"

    again = qea.Algebra.from_json(s.to_json())
    assert again.labels == s.labels

    assert qea.tau_vanishes([2, 2, 2], 2)
    assert not qea.tau_vanishes([3, 2, 2], 2)

    report = json.loads(qea.run_preset("tiny"))
    assert report["passed"], [p["phase"] for p in report["phases"] if not p["passed"]]

    try:
        qea.run_preset("nope")
    except ValueError as e:
        assert "unknown preset" in str(e)
    else:
        raise AssertionError("unknown preset accepted")

    print("smoke test passed:", repr(s))


if __name__ == "__main__":
    main()
