"""
Reverse-mode tape and forward-mode dual numbers
"""

from app.autodiff.layers import Dual
from app.autodiff.tape import Tape, Tensor

__all__ = ['Dual', 'Tape', 'Tensor']
