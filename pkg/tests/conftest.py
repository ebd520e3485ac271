import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # surface the per-criterion verdict lines collected by test_acceptance,
    # which fd-level capture would otherwise swallow on passing runs
    for name, mod in sys.modules.items():
        if name.rpartition(".")[2] == "test_acceptance":
            lines = getattr(mod, "VERDICTS", [])
            if lines:
                terminalreporter.section("acceptance criteria")
                for line in lines:
                    terminalreporter.write_line(line)
            break
