from pandas.io.api import read_excel
