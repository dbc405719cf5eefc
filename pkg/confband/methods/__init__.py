"""
confband Conformal Methods
"""
from confband.methods.functional import jackplus_fd, msplit_fd, split_fd
from confband.methods.multi import full, jackknife, jackplus, msplit, pvalue_at, split

__all__ = ["full", "pvalue_at", "split", "jackplus", "jackknife", "msplit",
           "split_fd", "jackplus_fd", "msplit_fd"]
