def alpha(x):
    return x + 1


def beta(x, flag=False, retries=0):
    del retries
    return -x if flag else x


def magic(n):
    return n * 2


class Gadget:
    def spin(self, times=1):
        return times
