from toylib.core import alpha, beta
