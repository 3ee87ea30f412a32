from .evaluator import Evaluator
from .recorder import ResultRecorder, CODE_VERSION
