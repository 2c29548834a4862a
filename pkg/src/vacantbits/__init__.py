"""Putting the vacant bits of 64-bit words to work.

* :mod:`vacantbits.tagcore` - 48-bit aligned addresses and the arena.
* :mod:`vacantbits.zint` - integers packed as TINY / LARGE / HUGE words.
* :mod:`vacantbits.utf8idx` - UTF-8 cursors holding character and byte index.
* :mod:`vacantbits.gcheap` - mark-and-sweep heap with stolen mark bits.
"""

__version__ = "0.1.0"
