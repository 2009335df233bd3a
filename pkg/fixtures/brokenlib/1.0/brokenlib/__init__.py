import frobnicator_engine

def stuff(x):
    return frobnicator_engine.frob(x)
