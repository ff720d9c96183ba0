from fractions import Fraction

from klsat.pool import ConstraintTemplate, Pool, WeightDistSpec


def single_pool(coeffs, rhs, lo=0, hi=1, w_x=0, w_psi=1, dist=None):
    return Pool(len(coeffs), (ConstraintTemplate(tuple(Fraction(a) for a in coeffs), Fraction(rhs)),),
                Fraction(lo), Fraction(hi), dist or WeightDistSpec.constant(0), w_x, w_psi)
