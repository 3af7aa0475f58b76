def doc():
    """A docstring
with an unindented line
    and a def inside: def fake():
"""
    return 1


def braces(x):
    d = {
'k': 1,
    }
    s = "not a # comment"
    t = 'quote \' inside'
    return d, s, t  # trailing


async def fetch(url,
                timeout=3):
    await go(url)
    return \
        url

lam = lambda v: v + 1


def one_liner(): return 42
def after_one_liner():
    pass
