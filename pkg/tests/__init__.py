from . import *