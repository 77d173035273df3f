"""Exception hierarchy shared across the package."""


class AgentJitError(Exception):
    """Base class for all errors raised by agentjit."""


class ManifestError(AgentJitError):
    """A tool manifest (or manifest set) is structurally invalid."""


class UnboundParam(AgentJitError):
    def __init__(self, name):
        super().__init__(f"pattern references unbound parameter ${name}")
        self.name = name


class ParseError(AgentJitError):
    def __init__(self, message, line=0, col=0, expected=()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = tuple(sorted(set(expected)))
        where = f"{line}:{col}: " if line else ""
        hint = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{where}{message}{hint}")


class PlanSchemaError(AgentJitError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class EmptyCandidateSet(AgentJitError):
    pass


class NegativeObservation(AgentJitError):
    pass


class UnknownElement(AgentJitError):
    def __init__(self, element):
        super().__init__(f"no latency distribution cached for element {element!r}")
        self.element = element


class NotParallelizable(AgentJitError):
    pass


class MalformedTrace(AgentJitError):
    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class SimulationError(AgentJitError):
    pass


class RuntimePreconditionFailure(SimulationError):
    def __init__(self, tool, key, expected=None, actual=None):
        super().__init__(f"{tool}: runtime precondition on {key!r} failed "
                         f"(expected {expected!r}, got {actual!r})")
        self.tool = tool
        self.key = key
        self.expected = expected
        self.actual = actual


class ConfigError(AgentJitError):
    pass
