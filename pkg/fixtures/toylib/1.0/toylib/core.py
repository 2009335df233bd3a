def alpha(x):
    return x + 1


def beta(x, flag=False):
    return -x if flag else x


class Gadget:
    def spin(self, times=1):
        return times
