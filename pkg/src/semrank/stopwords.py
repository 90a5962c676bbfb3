"""Bundled English stopword list.

The default list is the standard English function-word set; callers can
replace it with any set of terms (see ``TokenConfig``). Terms are stored
lowercase, so lowercasing must be enabled (the default) for the list to
match.
"""

ENGLISH_STOPWORDS = frozenset("""
a about above after again against all am an and any are aren as at be
because been before being below between both but by can cannot could
couldn did didn do does doesn doing don down during each few for from
further had hadn has hasn have haven having he her here hers herself him
himself his how i if in into is isn it its itself just me more most
mustn my myself no nor not now of off on once only or other our ours
ourselves out over own s same shan she should shouldn so some such t
than that the their theirs them themselves then there these they this
those through to too under until up very was wasn we were weren what
when where which while who whom why will with won would wouldn you your
yours yourself yourselves
""".split())


def read_stopword_list(path) -> frozenset:
    """Read a stopword file: one term per line, blank lines ignored.

    Terms are taken verbatim (not case-folded); supply lowercase terms
    when tokenization lowercases, which is the default.
    """
    terms = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            term = line.strip()
            if term:
                terms.add(term)
    return frozenset(terms)
