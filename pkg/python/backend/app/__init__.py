"""
jacobichain: spin chains built from discrete orthogonal polynomials.
Jacobi matrices, exact spectra and transfer amplitudes by three routes.
"""
