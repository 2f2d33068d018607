"""Exception types raised by the numerical checks.

Failures that falsify a theorem at given parameters (bound violations,
collisions, complex periodic points) carry the offending object as a witness.
"""


class SaddlescopeError(Exception):
    pass


class NonConvergence(SaddlescopeError):
    def __init__(self, code, reason=""):
        self.code = code
        self.reason = reason
        super().__init__(f"Newton continuation failed for code {code}: {reason}")


class Collision(SaddlescopeError):
    def __init__(self, code1, code2, point=None):
        self.code1 = code1
        self.code2 = code2
        self.point = point
        super().__init__(f"codes {code1} and {code2} converged to the same point {point}")


class ComplexPeriodicPoint(SaddlescopeError):
    def __init__(self, code, point):
        self.code = code
        self.point = point
        super().__init__(f"code {code} continued to a non-real periodic point {point}")


class ComplexMultipliers(SaddlescopeError):
    def __init__(self, point, eigenvalues):
        self.point = point
        self.eigenvalues = eigenvalues
        super().__init__(f"non-real multipliers {eigenvalues} at {point}")


class UnitModulus(SaddlescopeError):
    def __init__(self, point, eigenvalues):
        self.point = point
        self.eigenvalues = eigenvalues
        super().__init__(f"multiplier of modulus ~1 at {point}: {eigenvalues}")


class BoundViolation(SaddlescopeError):
    def __init__(self, orbits):
        self.orbits = list(orbits)
        super().__init__(f"{len(self.orbits)} orbit(s) violate the multiplier bounds")


class FiltrationError(SaddlescopeError):
    pass


class Undecided(SaddlescopeError):
    pass


class Resonance(SaddlescopeError):
    pass


class SmallRadius(SaddlescopeError):
    pass


class StepCollapse(SaddlescopeError):
    pass


class Inconclusive(SaddlescopeError):
    pass


class RefinementFailure(SaddlescopeError):
    pass


class DegenerateContact(SaddlescopeError):
    def __init__(self, event, curvature_gap):
        self.event = event
        self.curvature_gap = curvature_gap
        super().__init__(f"tangential contact with curvature gap {curvature_gap:.3g} is not quadratic")


class BadBracket(SaddlescopeError):
    pass


class FoldTrackingLost(SaddlescopeError):
    pass


class PatternViolation(SaddlescopeError):
    def __init__(self, message, orbit=None):
        self.orbit = orbit
        super().__init__(message)
