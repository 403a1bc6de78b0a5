"""Shared pytest hooks: print the acceptance certificate after the run."""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    for mod in list(sys.modules.values()):
        lines = getattr(mod, "CERTIFICATE_LINES", None)
        if lines:
            terminalreporter.section("acceptance certificate")
            for ln in lines:
                terminalreporter.write_line(ln)
            break
