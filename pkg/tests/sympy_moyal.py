"""Independent symbolic Moyal calculus for the tests (sympy only)."""
import sympy as sp

q_, p_ = sp.symbols("q p")


def sympy_star(f, g, hbar, order=8):
    """Moyal product by applying (d_q1 d_p2 - d_p1 d_q2)^n to f(q1,p1) g(q2,p2)."""
    q1, p1, q2, p2 = sp.symbols("q1 p1 q2 p2")
    fg = f.subs({q_: q1, p_: p1}) * g.subs({q_: q2, p_: p2})
    total, term = 0, fg
    for n in range(order + 1):
        total += (sp.I * hbar / 2) ** n / sp.factorial(n) * term
        term = sp.diff(term, q1, p2) - sp.diff(term, p1, q2)
        if term == 0:
            break
    return sp.expand(total.subs({q1: q_, p1: p_, q2: q_, p2: p_}))


def sympy_bracket(f, g, hbar, order=8):
    return sp.expand((sympy_star(f, g, hbar, order) - sympy_star(g, f, hbar, order)) / (sp.I * hbar))
