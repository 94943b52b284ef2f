from typing import Any, List, Optional


class WLError(Exception):
    """Base error for refinement, game and harness failures.

    Carries a human readable ``detail`` and the process exit code the
    command line surface reports for it.
    """

    exit_code: int = 1

    def __init__(self, detail: Any, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code

    def to_dict(self) -> dict:
        return {"detail": self.detail, "error": type(self).__name__}


class InputParseError(WLError):
    """Unreadable graph6 / edge-list / JSON input"""
    exit_code = 2


class InvalidParametersError(WLError):
    """Out-of-range generator or command parameters"""
    exit_code = 2


class InvalidColoringError(WLError):
    """A color table that violates the structural invariants"""

    def __init__(self, detail: Any, report: Any = None):
        super().__init__(detail)
        self.report = report

    def to_dict(self) -> dict:
        data = super().to_dict()
        if self.report is not None:
            data["report"] = self.report.model_dump()
        return data


class ConverseEquivalenceError(InvalidColoringError):
    """Variant requires converse equivalence and the input lacks it"""

    @property
    def witnesses(self) -> List[Any]:
        if self.report is None:
            return []
        return list(self.report.offending_pairs)


class IllegalMoveError(WLError):
    """A game move that breaks the rules for the player making it"""

    def __init__(self, detail: Any, move_index: Optional[int] = None):
        super().__init__(detail)
        self.move_index = move_index

    def to_dict(self) -> dict:
        data = super().to_dict()
        if self.move_index is not None:
            data["move_index"] = self.move_index
        return data


class LoopCapExceededError(WLError):
    """The Algorithm-1 loop ran past its iteration cap"""

    def __init__(self, detail: Any, dump: Optional[dict] = None):
        super().__init__(detail)
        self.dump = dump

    def to_dict(self) -> dict:
        data = super().to_dict()
        if self.dump is not None:
            data["dump"] = self.dump
        return data


class ConsistencyError(WLError):
    """Two independent computations of the same property disagree"""
