"""Exception types shared across the package."""


class RvaftError(Exception):
    """Base class for all errors raised by this package."""


class UnknownNodeError(RvaftError):
    def __init__(self, node_id):
        super().__init__(f"unknown node: {node_id!r}")
        self.node_id = node_id


class RootRemovalError(RvaftError):
    def __init__(self, node_id):
        super().__init__(f"cannot prune the root node {node_id!r}")
        self.node_id = node_id


class RootAnnotationError(RvaftError):
    def __init__(self, node_id):
        super().__init__(f"the root node {node_id!r} never carries an event annotation")
        self.node_id = node_id


class InvalidKError(RvaftError):
    def __init__(self, k, n):
        super().__init__(f"voting threshold k={k} outside 1..{n}")
        self.k = k
        self.n = n


class UnclassifiedBranchError(RvaftError):
    def __init__(self, path):
        super().__init__(f"branch {list(path)} has no fault or attack leaf")
        self.path = tuple(path)


class UnknownPropertyError(RvaftError):
    def __init__(self, name):
        super().__init__(f"no such property: {name!r}")
        self.name = name


class TypeMismatchError(RvaftError):
    """A guard combined values of incompatible types."""


class UnboundVariableError(RvaftError):
    def __init__(self, name):
        super().__init__(f"unbound variable: {name}")
        self.name = name


class GuardParseError(RvaftError):
    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class TreeParseError(RvaftError):
    """The tree document was not syntactically valid."""


class SchemaError(RvaftError):
    """The tree document was valid JSON but violated the document schema."""
