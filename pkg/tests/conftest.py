import pytest

from dpim.event_log import EventLog

HOSPITAL = {("R", "H", "M", "D"): 63, ("R", "H", "S", "D"): 25, ("R", "H", "D"): 12}
REPEATED_SURGERY = ("R", "H", "S", "S", "D")


def hospital_log(with_repeat: bool = False) -> EventLog:
    variants = dict(HOSPITAL)
    if with_repeat:
        variants[REPEATED_SURGERY] = 1
    return EventLog.from_variants(variants)


@pytest.fixture
def hospital():
    return hospital_log()


@pytest.fixture
def hospital_repeat():
    return hospital_log(with_repeat=True)


@pytest.fixture
def hospital_csv(tmp_path, hospital):
    path = tmp_path / "hospital.csv"
    path.write_text(hospital.to_csv())
    return path


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
