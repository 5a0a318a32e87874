"""Shared planted-truth scenario builders for the test suite."""

from topicflow.synth import PlantedEvent as E


def taxonomy_events():
    """4-year script planting 5 continuations, 3 splits, 3 merges,
    2 deaths, 2 births (the event-detection acceptance scenario)."""
    return (
        E(2011, "split", ("A",), ("A1", "A2")),
        E(2011, "death", ("D1",)),
        E(2011, "death", ("D2",)),
        E(2011, "continuation", ("C1",), ("C1",)),
        E(2011, "continuation", ("C2",), ("C2",)),
        E(2011, "birth", (), ("B1",)),
        E(2012, "split", ("B1",), ("B1a", "B1b")),
        E(2012, "merge", ("A1", "A2"), ("Am",)),
        E(2012, "continuation", ("C1",), ("C1",)),
        E(2012, "continuation", ("C2",), ("C2",)),
        E(2012, "birth", (), ("B2",)),
        E(2013, "merge", ("B1a", "B1b"), ("Bm",)),
        E(2013, "merge", ("C1", "C2"), ("Cm",)),
        E(2013, "split", ("Am",), ("Am1", "Am2")),
        E(2013, "continuation", ("B2",), ("B2",)),
    )


def pipeline_events(copies: int = 2):
    """Larger 4-year script for the end-to-end criterion: ``copies``
    independent instances of a 17-thread motif set."""
    out = []
    for c in range(copies):
        out.extend(_pipeline_motifs("" if c == 0 else f"_{c}"))
    return tuple(out)


def _pipeline_motifs(sfx: str):
    ev = []
    Y1, Y2, Y3 = 2011, 2012, 2013

    def N(b):
        return b + sfx

    def cont(y, b):
        ev.append(E(y, "continuation", (N(b),), (N(b),)))

    cont(Y1, "t1"); cont(Y2, "t1")
    ev.append(E(Y3, "split", (N("t1"),), (N("t1a"), N("t1b"))))
    cont(Y1, "t2")
    ev.append(E(Y2, "split", (N("t2"),), (N("t2a"), N("t2b"))))
    cont(Y3, "t2a"); cont(Y3, "t2b")
    ev.append(E(Y1, "split", (N("t3"),), (N("t3a"), N("t3b"))))
    cont(Y2, "t3a"); cont(Y2, "t3b")
    ev.append(E(Y3, "merge", (N("t3a"), N("t3b")), (N("t3m"),)))
    cont(Y1, "t4x"); cont(Y1, "t4y")
    ev.append(E(Y2, "merge", (N("t4x"), N("t4y")), (N("t4m"),)))
    cont(Y3, "t4m")
    ev.append(E(Y1, "merge", (N("t5x"), N("t5y")), (N("t5m"),)))
    cont(Y2, "t5m"); cont(Y3, "t5m")
    cont(Y1, "t6"); cont(Y2, "t6")
    ev.append(E(Y3, "death", (N("t6"),)))
    ev.append(E(Y1, "death", (N("t7"),)))
    ev.append(E(Y1, "birth", (), (N("t8"),)))
    cont(Y2, "t8"); cont(Y3, "t8")
    ev.append(E(Y2, "birth", (), (N("t9"),)))
    cont(Y3, "t9")
    cont(Y1, "t10")
    ev.append(E(Y2, "death", (N("t10"),)))
    cont(Y1, "t11x"); cont(Y1, "t11y"); cont(Y2, "t11x"); cont(Y2, "t11y")
    ev.append(E(Y3, "merge", (N("t11x"), N("t11y")), (N("t11m"),)))
    ev.append(E(Y1, "split", (N("t12"),), (N("t12a"), N("t12b"))))
    cont(Y2, "t12a"); cont(Y2, "t12b")
    ev.append(E(Y3, "split", (N("t12a"),), (N("t12a1"), N("t12a2"))))
    cont(Y3, "t12b")
    cont(Y1, "t13"); cont(Y2, "t13"); cont(Y3, "t13")
    cont(Y1, "t14x"); cont(Y1, "t14y"); cont(Y2, "t14x"); cont(Y2, "t14y")
    ev.append(E(Y3, "merge", (N("t14x"), N("t14y")), (N("t14m"),)))
    ev.append(E(Y1, "birth", (), (N("t15"),)))
    cont(Y2, "t15")
    ev.append(E(Y3, "death", (N("t15"),)))
    return ev
