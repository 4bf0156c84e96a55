"""Echo acceptance PASS/FAIL lines in the terminal summary, even when output is captured."""


def pytest_terminal_summary(terminalreporter):
    lines = []
    for kind in ("passed", "failed"):
        for rep in terminalreporter.getreports(kind):
            if rep.when != "call":
                continue
            lines += [ln for ln in rep.capstdout.splitlines()
                      if ln.startswith(("PASS criterion", "FAIL criterion"))]
    if lines:
        terminalreporter.section("acceptance criteria")
        for ln in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(ln)
