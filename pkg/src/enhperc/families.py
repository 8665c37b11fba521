"""Small built-in enhancement families used by the tests and the CLI."""

from .enhancement import Enhancement, EnhancementFamily, FamilyError


def _path(*pts):
    return tuple((pts[i], pts[i + 1]) for i in range(len(pts) - 1))


def _box_edges(r):
    out = []
    for x in range(-r, r + 1):
        for y in range(-r, r + 1):
            if x < r:
                out.append(((x, y), (x + 1, y)))
            if y < r:
                out.append(((x, y), (x, y + 1)))
    return tuple(out)


def pair_family():
    """Two level-1 members with short patterns; G_1 at anchor 0 reads 12 edges."""
    step = Enhancement("step", _path((1, 0), (1, 1)), _path((0, 0), (1, 0), (1, 1), (2, 1)))
    hook = Enhancement("hook", _path((0, 0), (1, 0), (2, 0)), _path((0, 0), (1, 0), (2, 0), (2, 1)))
    return EnhancementFamily((step, hook))


def _box_edges_at(lo, hi):
    out = []
    for x in range(lo[0], hi[0] + 1):
        for y in range(lo[1], hi[1] + 1):
            if x < hi[0]:
                out.append(((x, y), (x + 1, y)))
            if y < hi[1]:
                out.append(((x, y), (x, y + 1)))
    return tuple(out)


def two_level_family():
    """One member at level 1 and one at level 2, with long patterns.

    The patterns are long snakes (12 and 14 edges), so activation
    probabilities stay away from 0 and 1 on tori of a few hundred sites
    for p between 0.4 and 0.6.
    """
    snake1 = _path((0, 0), (1, 0), (2, 0), (3, 0), (3, 1), (2, 1), (1, 1), (0, 1),
                   (0, 2), (1, 2), (2, 2), (3, 2), (3, 3))
    block = Enhancement("block", snake1, _box_edges_at((0, 0), (3, 3)))
    snake2 = _path((0, 0), (1, 0), (2, 0), (3, 0), (4, 0), (4, 1), (3, 1), (2, 1), (1, 1), (0, 1),
                   (0, 2), (1, 2), (2, 2), (3, 2), (4, 2))
    ladder = Enhancement("ladder", snake2, snake2 + (((0, 0), (4, 2)), ((0, 2), (4, 0))))
    return EnhancementFamily((block, ladder))


def rotund_family(arm=24, core=3):
    """Full box core with long arms; rotund with c = core / arm.

    Both patterns have 10 edges and sit inside the core.
    """
    core_edges = _box_edges(core)
    arms = []
    for sgn in (1, -1):
        arms += [((sgn * i, 0), (sgn * (i + 1), 0)) for i in range(core, arm)]
        arms += [((0, sgn * i), (0, sgn * (i + 1))) for i in range(core, arm)]
    ring = _path((-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1))
    wheel = ring + (((0, 0), (1, 0)), ((0, 0), (0, 1)))
    cross = Enhancement("cross", wheel, core_edges + tuple(arms))
    corner = _path((0, 0), (1, 0), (2, 0), (2, 1), (1, 1), (0, 1), (0, 2), (1, 2), (2, 2), (2, 3), (1, 3))
    diag = [((i, i), (i + 1, i + 1)) for i in range(core, arm)]
    diag += [((-i, -i), (-i - 1, -i - 1)) for i in range(core, arm)]
    fan = Enhancement("fan", corner, core_edges + tuple(diag) + tuple(a for a in arms if a[0][1] == 0))
    return EnhancementFamily((cross, fan), rotund_c=core / arm)


def plaquette_family():
    """Level 0: an open corner closes its plaquette."""
    corner = _path((0, 0), (1, 0), (1, 1))
    return EnhancementFamily((Enhancement("plaquette", corner, _path((0, 0), (1, 0), (1, 1), (0, 1), (0, 0))),))


BUILTIN = {
    "pair": pair_family,
    "two-level": two_level_family,
    "rotund": rotund_family,
    "plaquette": plaquette_family,
}


def builtin(name):
    try:
        return BUILTIN[name]()
    except KeyError:
        raise FamilyError(f"unknown built-in family {name!r}; choose from {', '.join(sorted(BUILTIN))}") from None
