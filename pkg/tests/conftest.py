import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

# criterion number -> (description, passed, detail), filled in by
# test_acceptance and printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section('acceptance criteria')
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        line = f'criterion {number} {"PASS" if passed else "FAIL"}: {title}'
        if detail:
            line += f' ({detail})'
        terminalreporter.write_line(line)
