"""Memory-augmented multi-agent loop for profiling-guided GPU kernel optimization.

The package is organised around a deterministic core and a pluggable rim:

* :mod:`kernelsmith.knowledge` -- the long-term knowledge base (ten structured
  sections) with loading, validation, and derived-field ordering.
* :mod:`kernelsmith.engine` -- the deterministic retrieval workflow that turns
  profiling + code evidence into an audited method recommendation.
* :mod:`kernelsmith.features` -- static code-feature extraction (rule patterns
  plus optional assisted classification).
* :mod:`kernelsmith.profiling` -- profiler export parsers and timing/speedup
  arithmetic.
* :mod:`kernelsmith.trajectory` -- per-task short-term memory: round records,
  repair chains, optimization histories, base/best promotion.
* :mod:`kernelsmith.agents` / :mod:`kernelsmith.backends` -- the reasoning
  roles and their backends (scripted for tests, HTTP for live runs).
* :mod:`kernelsmith.orchestrator` -- the session loop, seed selection, and
  benchmark metrics.
* :mod:`kernelsmith.cli` -- operator surface.
"""

__version__ = "0.1.0"
