"""darkemit: deterministic single-photon source simulation at desk scale.

Two qubits ultrastrongly coupled to one resonator emit a pair of single
photons per excitation through consecutive adiabatic transfers along
one-photon dark states of the two-qubit Rabi, Rabi-Stark and
Jaynes-Cummings models.  The package reproduces the spectra, transfer
dynamics, photon waveforms and correlation figures of merit of that
protocol with a time-dependent Lindblad master equation and quantum
regression sweeps.
"""

__version__ = "0.1.0"

from ._kernels import backend_name

__all__ = ["backend_name", "__version__"]
