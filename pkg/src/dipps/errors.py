"""Exceptions raised by the scheduling engine."""


class DippsError(Exception):
    pass


class Infeasible(DippsError):
    """No assignment of the mode binaries admits a feasible schedule."""


class WindowTooLarge(DippsError):
    def __init__(self, binaries: int, limit: int):
        self.binaries = binaries
        self.limit = limit
        super().__init__(f"enumeration over {binaries} binaries exceeds the guard of {limit}")


class NodeLimitExceeded(DippsError):
    pass


class UnboundedVariable(DippsError):
    pass


class LiftInconsistency(DippsError):
    def __init__(self, lift: str, step: int, value: float, expected: float):
        self.lift = lift
        self.step = step
        super().__init__(f"lift {lift}[{step}] = {value:.9g} but base * gate = {expected:.9g}")


class WindowInfeasible(DippsError):
    def __init__(self, start: int, policy: str, n_p: int):
        self.start = start
        self.policy = policy
        self.n_p = n_p
        super().__init__(f"window starting at step {start} (N_p={n_p}) infeasible under terminal policy {policy}")
