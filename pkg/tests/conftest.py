import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

_ACCEPTANCE: dict[str, tuple[bool | None, str]] = {}


def record_acceptance(cid: str, ok: bool | None, detail: str) -> None:
    """Store one criterion outcome; ``ok=None`` marks a non-gating report."""
    _ACCEPTANCE[cid] = (ok, detail)
    word = "INFO" if ok is None else ("PASS" if ok else "FAIL")
    print(f"\nACCEPTANCE {cid}: {word} - {detail}", flush=True)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE, key=lambda c: (len(c), c)):
        ok, detail = _ACCEPTANCE[cid]
        word = "INFO" if ok is None else ("PASS" if ok else "FAIL")
        terminalreporter.write_line(f"criterion {cid}: {word} - {detail}")
