from .scene import SceneConfig
from .ris import AmplitudeModel, PhaseProfile, WeightMode
from .signal import ObservationSet, ParameterVector
from .derivatives import FiniteDiffReport, Hessian, Jacobian
from .optimization import LocalResult, MultiStartResult, StartRecord
from .bounds import BoundsReport, CRBReport
from .estimation import AngleEstimate, EstimationResult, RmseResult, TrialRecord
from .verification import CheckResult, VerifyReport

__all__ = [
    "SceneConfig", "AmplitudeModel", "PhaseProfile", "WeightMode",
    "ObservationSet", "ParameterVector",
    "Jacobian", "Hessian", "FiniteDiffReport",
    "LocalResult", "StartRecord", "MultiStartResult",
    "BoundsReport", "CRBReport",
    "AngleEstimate", "EstimationResult", "TrialRecord", "RmseResult",
    "CheckResult", "VerifyReport",
]
