import numpy as np
import pytest

from fairbayes_dpp.gaussian_oracle import GaussianModelSpec, sample


def write_gaussian_csv(path, n, seed, p=0.6, shuffle_groups=False):
    """Synthetic tabular file with columns x1, x2, group, label."""
    ds = sample(GaussianModelSpec.table1(p), n, seed)
    names = np.array(["g0", "g1"])[ds.groups]
    lines = ["x1,x2,group,label"]
    for (x1, x2), g, y in zip(ds.features.tolist(), names, ds.labels.tolist()):
        lines.append(f"{x1!r},{x2!r},{g},{y}")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def gaussian_csv(tmp_path):
    return write_gaussian_csv(tmp_path / "gauss.csv", 3000, 5)


# -------------------------------------------------- acceptance summary lines

_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        verdict = "PASS" if report.passed else "FAIL"
        _ACCEPTANCE.append(f"criterion {props['criterion']}: {verdict}  {props.get('detail', '')}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
