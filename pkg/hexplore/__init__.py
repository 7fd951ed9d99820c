from hexplore import utils
from hexplore import ring
from hexplore import rlwe
from hexplore import ckks
from hexplore import bootstrap
from hexplore import repack
from hexplore import pfe
from hexplore import threshold
from hexplore import serialization
from hexplore import profiles
from hexplore import metrics
from hexplore import protocol
from hexplore import data
