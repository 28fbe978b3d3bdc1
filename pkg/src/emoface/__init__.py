"""Continuous emotion-editable speech-driven 3D facial animation, desk scale.

Subsystems: `numerics` (autodiff + gradient checking), `manifold` (boundary
editing), `facemodel` (blendshape decode), `losses`, `diffusion`, `metrics`,
`synthdata`, and `pipeline`/`service`/`cli` orchestration.
"""

__version__ = "0.1.0"
