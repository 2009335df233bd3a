def alpha(x):
    return x + 1


def beta(x, flag=False):
    return -x if flag else x


def magic(n):
    return n * 2


class Gadget:
    def spin(self, times=1):
        return times
