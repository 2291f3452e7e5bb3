"""Exception hierarchy shared by every module of the package."""


class BiasCalError(Exception):
    """Base class for all package errors."""


class CardinalityExceeded(BiasCalError):
    def __init__(self, cardinality, limit):
        super().__init__(f"output space has {cardinality} assignments, limit is {limit}")
        self.cardinality = cardinality
        self.limit = limit


class InfeasibleAssignment(BiasCalError):
    pass


class UnknownOutput(BiasCalError):
    pass


class UnknownGender(BiasCalError):
    pass


class UnknownKey(BiasCalError):
    pass


class MismatchedDomains(BiasCalError):
    pass


class MisalignedCorpora(BiasCalError):
    pass


class UndefinedTrainBias(BiasCalError):
    pass


class ConfigInvalid(BiasCalError):
    pass


class BudgetExceeded(BiasCalError):
    def __init__(self, combinations, budget):
        super().__init__(f"joint space has {combinations} combinations, budget is {budget}")
        self.combinations = combinations
        self.budget = budget


class CorpusInvalid(BiasCalError):
    """Raised by loaders when a document fails validation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations) or "invalid corpus")
