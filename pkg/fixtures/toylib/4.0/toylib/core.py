def alpha(x):
    return x + 1


def beta(x, flag=False, retries=0):
    del retries
    return -x if flag else x


class Gadget:
    def spin(self, times=1):
        return times
