"""Hot numeric kernels.

The compiled extension is preferred when it was built; otherwise the
pure-Python fallback is selected at import time. ``COMPILED`` records
which one is active so benchmarks and tests can tell them apart.
"""

try:
    from istruttore._kernels._lcs import lcs_length

    COMPILED = True
except ImportError:  # extension not built on this install
    from istruttore._kernels._lcs_py import lcs_length

    COMPILED = False

__all__ = ["lcs_length", "COMPILED"]
