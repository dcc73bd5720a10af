"""Classical simulation suite for amplified-search optimisation experiments.

Submodules:

* ``dist_core`` -- solution-quality distributions and threshold queries
* ``problems`` -- vehicle-routing and portfolio instance generation/enumeration
* ``grover_model`` -- closed-form amplification laws and simulated measurement
* ``algorithms`` -- maoa / gas / rgas / classical runners with effort accounting
* ``harness`` -- seeded Monte Carlo success-vs-effort experiments
* ``reduced_graph`` -- contracted complete-graph walk dynamics
* ``qwoa_lab`` -- circulant-graph statevector studies
* ``cli`` -- command-line surface
"""

__version__ = "0.1.0"
