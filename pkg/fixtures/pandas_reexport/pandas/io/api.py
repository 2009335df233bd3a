from pandas.io.excel._base import read_excel
