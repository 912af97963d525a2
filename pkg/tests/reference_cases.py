"""The two worked synthesis cases used as an interpreter oracle.

Example indices are 0-based here. Two transcription slips in the printed
listing are corrected (see the project notes): a stray comma in case one's
fifth input, and case two's global solution reading TAIL/TAKE of the int c
where the list d is meant.
"""

CASE1_GLOBAL = """a <- LIST
b <- ZIPWITH + a a
c <- TAIL b
d <- TAKE c b
e <- COUNT >0 d
f <- TAKE e d
g <- COUNT >0 f
h <- TAKE g f
i <- TAKE g h
j <- HEAD i
k <- TAKE j i
l <- TAKE j k
m <- TAKE j k
n <- TAKE j k
o <- REVERSE n"""

CASE1_EXAMPLES = [
    (((4, 5, 6, 2, 6, 2, 1, 6, 1, 4, 2, 5, 6, 3, 2, 2),), (4, 12, 10, 8)),
    (((3, 2, 5, 0, 3, 2, 3, 0, 4, 1, 0, 2, 3, 0, 3, 4),), (6, 0, 10, 4, 6)),
    (((1, 1, 4, 0, 0, 0, 0, 5, 0, 5, 3, 5),), (2, 2)),
    (((4, 4, 1, 4, 4, 1, 4, 2, 2, 1, 3, 4),), (4, 8, 2, 8, 8, 2, 8, 8)),
    (((4, 1, 1, 3, 3, 1, 4, 0, 4, 2, 4),), (8, 2, 6, 6, 2, 2, 8)),
]

CASE1_PE = [
    ("""a <- LIST
b <- ZIPWITH + a a
c <- TAIL b
d <- TAKE c b
e <- REVERSE d""", {0, 3}),
    ("""a <- LIST
b <- ZIPWITH + a a
c <- HEAD b
d <- TAKE c b
e <- COUNT >0 d
f <- TAKE e d
g <- REVERSE f""", {1, 2, 3, 4}),
]

CASE2_GLOBAL = """a <- LIST
b <- INT
c <- MAXIMUM a
d <- TAKE c a
e <- TAIL d
f <- TAKE b d
g <- ZIPWITH + f f
h <- MAP +1 g
i <- TAKE e h"""

CASE2_EXAMPLES = [
    (((1, 0, 3, 3, 3), 35), (3, 1, 7)),
    (((6, 3, 3, 1, 2, 2, 0, 3, 8, 7), 50), (13, 7, 7)),
    (((1, 5, 6, 10, 5, 11, 7, 0, 7, 11, 10, 9, 4), 78), (3, 11, 13, 21, 11, 23, 15, 1, 15, 23)),
    (((12, 4, 11, 11, 4, 7, 12, 11, 11, 10, 5, 8, 9, 8), 166), (25, 9, 23, 23, 9, 15, 25, 23)),
    (((4, 0, 5, 5, 1, 1, 1, 1), 126), (9,)),
]

CASE2_P1 = """a <- LIST
b <- INT
c <- TAIL a
d <- TAKE c a
e <- ZIPWITH + d d
f <- MAP +1 e"""

CASE2_P2 = """a <- LIST
b <- INT
c <- TAKE b a
d <- TAIL c
e <- ACCESS d c
f <- TAKE e c
g <- ZIPWITH + f f
h <- MAP +1 g"""

# p1, p2, (failed), p4 = p1, p5 = p1 with their satisfied sets;
# p2's printed set lists #5 where execution gives #2 (same score 0.4)
CASE2_PE = [(CASE2_P1, {0, 3, 4}), (CASE2_P2, {0, 1}), (CASE2_P1, {0, 3, 4}), (CASE2_P1, {0, 3, 4})]
