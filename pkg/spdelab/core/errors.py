class SpdeLabError(Exception):
    pass


class ConfigurationError(SpdeLabError, ValueError):
    pass


class ArgumentError(SpdeLabError, ValueError):
    pass


class ContractError(SpdeLabError, TypeError):
    pass


class SimulationError(SpdeLabError, RuntimeError):
    def __init__(self, message: str, step_index: int):
        super().__init__(f"{message} (step {step_index})")
        self.step_index = step_index


class EstimatorError(SpdeLabError, RuntimeError):
    def __init__(self, message: str, count: int):
        super().__init__(f"{message} ({count} non-finite evaluations)")
        self.count = count


class FitError(SpdeLabError, RuntimeError):
    pass


class ProbeError(SpdeLabError, RuntimeError):
    pass


class SchemeError(SpdeLabError, RuntimeError):
    pass


class DivergenceError(SpdeLabError, RuntimeError):
    def __init__(self, message: str, factor: float):
        super().__init__(f"{message} (measured contraction factor {factor:.4f})")
        self.factor = factor
