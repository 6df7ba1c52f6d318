"""Receding-horizon trajectory planning with interval reachable-tube
certification.

Layers, bottom up:

* ``geometry``  - intervals, boxes, convex polygons, collision primitives
* ``kernels``   - numeric hot loops (numba-compiled with a numpy fallback)
* ``dynamics``  - unicycle / planning models, command profiles, disturbances
* ``frs``       - offline sampled forward-reachable-set table and inflation
* ``planner``   - online trajectory-parameter optimization
* ``verifier``  - mixed-monotone interval tube propagation and certification
* ``repair``    - corrective-action ladder for rejected candidates
* ``harness``   - receding-horizon simulation, benchmarking, traces, plots
"""

__version__ = "0.1.0"
