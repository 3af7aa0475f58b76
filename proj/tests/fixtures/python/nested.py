def deco(fn):
    def wrapper(*args, **kwargs):
        def deepest():
            return fn(*args, **kwargs)
        return deepest()
    return wrapper


class Outer:
    class Inner:
        def method(self):
            x = 1

            # blank and comment lines inside

            return x

    def other(self):
        if True:
            pass
        else:
            pass


@deco
def decorated(
    a,
    b,
):
    return a + b
# trailing comment at column zero
    # indented trailing comment


def last():
    pass
