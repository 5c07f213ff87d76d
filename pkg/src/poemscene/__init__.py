"""poemscene: turn a short poem into a navigable 3D Gaussian-splat scene.

The engine chains LLM-driven literary parsing, generative image backends
(with offline mocks), panoramic geometry, dense depth unprojection, and a
differentiable CPU splat renderer/optimizer, then scores renders with
from-scratch no-reference quality metrics and serves scenes over HTTP.
"""

__version__ = "0.1.0"
