import os
import sys

CONSTANT = 3


def add(a, b):
    return a + b


def outer(x):
    # comment inside
    def inner(y):
        return y * 2

    total = 0
    for i in range(x):
        total += inner(i)
    return total


class Account:
    rate = 0.1

    def __init__(self, owner):
        self.owner = owner
        self.balance = 0

    @property
    def name(self):
        return self.owner

    @staticmethod
    @some.decorator(arg=1)
    def helper(values):
        return [
            v
            for v in values
        ]


if __name__ == "__main__":
    print(add(1, 2))
