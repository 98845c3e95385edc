"""Smoke test for the qeflow_py extension: build with `maturin develop` first."""

import json
import re
import tempfile

import qeflow_py


def main():
    assert qeflow_py.success_rate(10, 9) == "90.00"
    assert qeflow_py.success_rate(0, 0) is None

    predefined, extracted, required = qeflow_py.required_types("Create test cases for login and signup")
    assert set(predefined) | set(extracted) == set(required), (predefined, extracted, required)

    value, violated = qeflow_py.synthesize_value("email", "valid", seed=7)
    assert re.fullmatch(r"[^@\s]+@[^@\s]+\.[^@\s]+", value), value
    assert violated is None
    value, violated = qeflow_py.synthesize_value("email", "invalid:format", seed=7)
    assert violated == "format", (value, violated)

    expected = {"swag": (10, 9), "medibox": (10, 7)}
    for app, (total, passed) in expected.items():
        with tempfile.TemporaryDirectory() as out:
            report = json.loads(qeflow_py.run_fixture(app, out))
        metrics = report["metrics"]
        assert (metrics["total_cases"], metrics["passed"]) == (total, passed), metrics
        print(f"{app}: {metrics['passed']}/{metrics['total_cases']} passed")

    try:
        qeflow_py.run_fixture("nowhere", "/tmp/unused")
    except ValueError as e:
        assert "nowhere" in str(e)
    else:
        raise AssertionError("unknown fixture accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
