class ConfigError(ValueError):
    """Invalid run configuration; carries every problem found, not just the first."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class GeometryError(ValueError):
    """Curved-coordinate evaluation where rho = R + r cos(theta) is not positive."""
