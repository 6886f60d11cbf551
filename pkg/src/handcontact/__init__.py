"""Hand contact-state recognition at desk scale.

A self-contained implementation of a contact-estimation head: cross-feature
affinity pooling and spatial attention over hand / hand-object union feature
maps, element-wise max combination over detected objects, masked multi-label
training, plus the surrounding apparatus (annotation geometry, joint
detection+contact average precision, a pose-heuristic baseline, a synthetic
training harness, and a CLI).

Numeric hot paths run on a compiled kernel backend when available; see
handcontact.backend.
"""

from .backend import backend_name
from .tensor import Parameter, Tensor, backward, sgd_step

__version__ = "0.1.0"

__all__ = ["Tensor", "Parameter", "backward", "sgd_step", "backend_name", "__version__"]
