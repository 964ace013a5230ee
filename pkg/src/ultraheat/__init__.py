"""Heat equation and jump processes on finite products of p-adic fields."""
from .filtration import (Filtration, FiltrationError, LevelCapExceeded, PrimeSet,
                         make_general_filtration, n_adic_filtration, taibleson_filtration)
from .sadic import (CharacterValue, SAdicPoint, WindowOverflow, char_phase, distance,
                    enumerate_cosets, norm, order, pairing, point, zero)
from .funcspace import (TestFunction, fourier, indicator_ball, indicator_sphere,
                        inverse_fourier)
from .spectral import (CertifiedValue, OnSphere, SymbolAlpha, apply_dalpha, duhamel_solve, evolve,
                       heat_kernel, radial_integral, spectrum)
from .markov import BallSpec, IncrementSampler, Trajectory, sample_path, transition_P

__version__ = "0.1.0"
