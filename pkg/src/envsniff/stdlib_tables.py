"""Embedded standard-library module tables per interpreter line.

A dotted name roots in the standard library when its first segment appears
in the module index of *any* supported interpreter line.  Deliberate
over-approximation: misclassifying a third-party package that shadows a
historical stdlib name is cheaper than pulling stdlib modules into the
dependency resolution.
"""

from __future__ import annotations

import builtins

# Top-level module index of the 2.7 line (curated; platform modules included).
PY27_MODULES = frozenset("""
abc aifc al anydbm argparse array ast asynchat asyncore atexit audioop base64
BaseHTTPServer Bastion bdb binascii binhex bisect bsddb bz2 calendar cd cgi
CGIHTTPServer cgitb chunk cmath cmd code codecs codeop collections colorsys
commands compileall compiler ConfigParser contextlib Cookie cookielib copy
copy_reg cPickle cProfile crypt cStringIO csv ctypes curses datetime dbhash
dbm decimal difflib dircache dis distutils dl doctest DocXMLRPCServer dumbdbm
dummy_thread dummy_threading email encodings ensurepip errno exceptions fcntl
filecmp fileinput fl fm fnmatch formatter fpectl fpformat fractions ftplib
functools future_builtins gc gdbm getopt getpass gettext gl glob grp gzip
hashlib heapq hmac hotshot htmlentitydefs htmllib HTMLParser httplib imageop
imaplib imgfile imghdr imp importlib imputil inspect io itertools json
keyword lib2to3 linecache locale logging macpath mailbox mailcap marshal math
md5 mhlib mimetools mimetypes MimeWriter mimify mmap modulefinder msilib
msvcrt multifile multiprocessing mutex netrc new nis nntplib ntpath numbers
operator optparse os ossaudiodev parser pdb pickle pickletools pipes pkgutil
platform plistlib popen2 poplib posix posixfile posixpath pprint profile
pstats pty pwd py_compile pyclbr pydoc Queue quopri random re readline repr
resource rexec rfc822 rlcompleter robotparser runpy sched select sets sgmllib
sha shelve shlex shutil signal SimpleHTTPServer SimpleXMLRPCServer site smtpd
smtplib sndhdr socket SocketServer spwd sqlite3 ssl stat statvfs string
StringIO stringprep strop struct subprocess sunau sunaudiodev symbol symtable
sys sysconfig syslog tabnanny tarfile telnetlib tempfile termios test
textwrap thread threading time timeit Tkinter token tokenize trace traceback
tty turtle types unicodedata unittest urllib urllib2 urlparse user UserDict
UserList UserString uu uuid warnings wave weakref webbrowser whichdb winsound
wsgiref xdrlib xml xmlrpclib zipfile zipimport zlib
""".split())

# Union of the 3.1 through 3.13 top-level module indexes: the 3.10 set plus
# modules added later (tomllib) and modules retired along the way
# (formatter, parser, symbol, dummy_threading, macpath, fpectl).
PY3_MODULES = frozenset("""
abc aifc antigravity argparse array ast asynchat asyncio asyncore atexit
audioop base64 bdb binascii binhex bisect builtins bz2 cProfile calendar cgi
cgitb chunk cmath cmd code codecs codeop collections colorsys compileall
concurrent configparser contextlib contextvars copy copyreg crypt csv ctypes
curses dataclasses datetime dbm decimal difflib dis distutils doctest
dummy_threading email encodings ensurepip enum errno faulthandler fcntl
filecmp fileinput fnmatch formatter fpectl fractions ftplib functools gc
genericpath getopt getpass gettext glob graphlib grp gzip hashlib heapq hmac
html http idlelib imaplib imghdr imp importlib inspect io ipaddress itertools
json keyword lib2to3 linecache locale logging lzma macpath mailbox mailcap
marshal math mimetypes mmap modulefinder msilib msvcrt multiprocessing netrc
nis nntplib nt ntpath nturl2path numbers opcode operator optparse os
ossaudiodev parser pathlib pdb pickle pickletools pipes pkgutil platform
plistlib poplib posix posixpath pprint profile pstats pty pwd py_compile
pyclbr pydoc pydoc_data pyexpat queue quopri random re readline reprlib
resource rlcompleter runpy sched secrets select selectors shelve shlex shutil
signal site smtpd smtplib sndhdr socket socketserver spwd sqlite3 sre_compile
sre_constants sre_parse ssl stat statistics string stringprep struct
subprocess sunau symbol symtable sys sysconfig syslog tabnanny tarfile
telnetlib tempfile termios test textwrap this threading time timeit tkinter
token tokenize tomllib trace traceback tracemalloc tty turtle turtledemo
types typing unicodedata unittest urllib uu uuid venv warnings wave weakref
webbrowser winreg winsound wsgiref xdrlib xml xmlrpc zipapp zipfile zipimport
zlib zoneinfo
""".split())

TABLES: dict[str, frozenset[str]] = {
    "2.7": PY27_MODULES,
    "3": PY3_MODULES,
}

ALL_LINES: tuple[str, ...] = tuple(sorted(TABLES))

BUILTIN_NAMES = frozenset(vars(builtins))


def is_stdlib_module(root: str) -> bool:
    return any(root in table for table in TABLES.values())


def lines_containing(root: str) -> tuple[str, ...]:
    """Interpreter lines whose module index contains ``root``."""
    return tuple(line for line in ALL_LINES if root in TABLES[line])
