"""
Palabras finitas y periodicas sobre el alfabeto {1..k}
Representacion jerarquica (literal / concatenacion / potencia), metrica del shift
y el predicado de ventana que realiza la cercania a escala delta
"""
import math
import re
from bisect import bisect_right
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterator, Sequence, Tuple, Union

import numpy as np

from .errors import HorizonTooLarge, WordOverflow


# Longitud maxima representable (enteros sin signo de 64 bits)
MAX_WORD_LENGTH = 2 ** 64 - 1

# Expansion literal permitida (simbolos en memoria)
EXPANSION_CAP = 10_000_000

# Corte por defecto para shift_distance
DEFAULT_CUTOFF = 64


@dataclass(frozen=True)
class Alphabet:
    """Alfabeto {1..k}"""
    k: int

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"Alfabeto requiere k >= 2, recibido {self.k}")
        if self.k > 9:
            # La gramatica de texto usa un digito por simbolo
            raise ValueError(f"Alfabeto limitado a 9 simbolos, recibido {self.k}")

    @property
    def symbols(self) -> range:
        return range(1, self.k + 1)

    def __contains__(self, j: int) -> bool:
        return 1 <= j <= self.k


class HierarchicalWord:
    """Nodo base del arbol de expresion de una palabra finita"""

    length: int

    def symbol_at(self, i: int) -> int:
        """
        Simbolo en la posicion i de la expansion completa

        Args:
            i: Indice con 0 <= i < length

        Returns:
            Simbolo en 1..k
        """
        if not 0 <= i < self.length:
            raise IndexError(f"Indice fuera de rango: {i} (longitud {self.length})")
        node = self
        while True:
            if isinstance(node, Literal):
                return node.symbols[i]
            if isinstance(node, Power):
                i %= node.child.length
                node = node.child
            else:
                pos = bisect_right(node.offsets, i) - 1
                i -= node.offsets[pos]
                node = node.children[pos]

    def iter_symbols(self) -> Iterator[int]:
        raise NotImplementedError

    def expand(self, cap: int = EXPANSION_CAP) -> np.ndarray:
        """Expansion literal como array uint8"""
        if self.length > cap:
            raise HorizonTooLarge(f"Expansion de {self.length} simbolos excede el limite {cap}")
        return _expand(self, {})

    def to_text(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_text()


@dataclass(frozen=True)
class Literal(HierarchicalWord):
    symbols: Tuple[int, ...]

    def __post_init__(self):
        for j in self.symbols:
            if not 1 <= j <= 9:
                raise ValueError(f"Simbolo no valido: {j}")

    @property
    def length(self) -> int:
        return len(self.symbols)

    def iter_symbols(self) -> Iterator[int]:
        return iter(self.symbols)

    def to_text(self) -> str:
        return 'LITERAL:"' + "".join(str(j) for j in self.symbols) + '"'


@dataclass(frozen=True)
class Power(HierarchicalWord):
    child: HierarchicalWord
    exponent: int
    length: int = field(init=False, compare=False)

    def __post_init__(self):
        if self.exponent < 1:
            raise ValueError(f"Exponente debe ser >= 1, recibido {self.exponent}")
        total = self.exponent * self.child.length
        if total > MAX_WORD_LENGTH:
            raise WordOverflow(f"Longitud {total} no cabe en 64 bits")
        object.__setattr__(self, "length", total)

    def iter_symbols(self) -> Iterator[int]:
        for _ in range(self.exponent):
            yield from self.child.iter_symbols()

    def to_text(self) -> str:
        return f"POWER({self.child.to_text()},{self.exponent})"


@dataclass(frozen=True)
class Concat(HierarchicalWord):
    children: Tuple[HierarchicalWord, ...]
    length: int = field(init=False, compare=False)
    offsets: Tuple[int, ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if not self.children:
            raise ValueError("Concatenacion vacia")
        offsets = []
        total = 0
        for child in self.children:
            offsets.append(total)
            total += child.length
        if total > MAX_WORD_LENGTH:
            raise WordOverflow(f"Longitud {total} no cabe en 64 bits")
        object.__setattr__(self, "length", total)
        object.__setattr__(self, "offsets", tuple(offsets))

    def iter_symbols(self) -> Iterator[int]:
        for child in self.children:
            yield from child.iter_symbols()

    def to_text(self) -> str:
        return "CONCAT(" + ",".join(c.to_text() for c in self.children) + ")"


def _expand(node: HierarchicalWord, memo: Dict[int, np.ndarray]) -> np.ndarray:
    # Subarboles compartidos se expanden una sola vez
    key = id(node)
    if key in memo:
        return memo[key]
    if isinstance(node, Literal):
        out = np.array(node.symbols, dtype=np.uint8)
    elif isinstance(node, Power):
        out = np.tile(_expand(node.child, memo), node.exponent)
    else:
        out = np.concatenate([_expand(c, memo) for c in node.children])
    memo[key] = out
    return out


WordLike = Union[HierarchicalWord, str, Sequence[int]]


def literal(word: Union[str, Sequence[int], "Literal"]) -> Literal:
    """Convierte "121" o [1, 2, 1] en Literal"""
    if isinstance(word, Literal):
        return word
    if isinstance(word, str):
        if not re.fullmatch(r"[1-9]*", word):
            raise ValueError(f"Palabra literal no valida: {word!r}")
        return Literal(tuple(int(ch) for ch in word))
    return Literal(tuple(int(j) for j in word))


def iter_symbols(word: WordLike) -> Iterator[int]:
    """Itera simbolos sin expandir la palabra"""
    if isinstance(word, HierarchicalWord):
        return word.iter_symbols()
    return literal(word).iter_symbols()


def word_length(word: WordLike) -> int:
    if isinstance(word, HierarchicalWord):
        return word.length
    return len(word)


def symbol_at(word: HierarchicalWord, i: int) -> int:
    return word.symbol_at(i)


def build_stage_word(prev: HierarchicalWord, k_n: int, alpha: Union[Literal, str]) -> HierarchicalWord:
    """
    Construye xi_n = xi_{n-1}^{k_n} alpha_n

    Args:
        prev: Palabra de la etapa anterior
        k_n: Repeticiones (>= 2)
        alpha: Palabra de ruido (longitud >= 1)

    Returns:
        Concat(Power(prev, k_n), alpha)
    """
    if k_n < 2:
        raise ValueError(f"k_n debe ser >= 2, recibido {k_n}")
    alpha = literal(alpha)
    if alpha.length == 0:
        raise ValueError("La palabra de ruido no puede ser vacia")
    if k_n * prev.length + alpha.length > MAX_WORD_LENGTH:
        raise WordOverflow(f"El periodo {k_n} * {prev.length} + {alpha.length} no cabe en 64 bits")
    return Concat((Power(prev, k_n), alpha))


# ── Gramatica de texto ────────────────────────────────────────────

_TOKEN = re.compile(r'\s*(LITERAL:"[1-9]*"|POWER\(|CONCAT\(|\)|,|\d+)')


def parse_word(text: str) -> HierarchicalWord:
    """Parsea LITERAL:"121", POWER(expr,k) y CONCAT(e1,e2,...)"""
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if not match:
            raise ValueError(f"Gramatica de palabra no valida cerca de: {text[pos:pos + 20]!r}")
        tokens.append(match.group(1))
        pos = match.end()

    node, used = _parse_expr(tokens, 0)
    if used != len(tokens):
        raise ValueError("Texto sobrante despues de la palabra")
    return node


def _parse_expr(tokens, i):
    if i >= len(tokens):
        raise ValueError("Palabra incompleta")
    tok = tokens[i]
    if tok.startswith("LITERAL:"):
        return literal(tok[len('LITERAL:"'):-1]), i + 1
    if tok == "POWER(":
        child, i = _parse_expr(tokens, i + 1)
        if tokens[i:i + 1] != [","] or i + 2 >= len(tokens) or not tokens[i + 1].isdigit():
            raise ValueError("POWER requiere (expr,k)")
        exponent = int(tokens[i + 1])
        if tokens[i + 2] != ")":
            raise ValueError("POWER sin cerrar")
        return Power(child, exponent), i + 3
    if tok == "CONCAT(":
        children = []
        i += 1
        while True:
            child, i = _parse_expr(tokens, i)
            children.append(child)
            if i >= len(tokens):
                raise ValueError("CONCAT sin cerrar")
            if tokens[i] == ")":
                return Concat(tuple(children)), i + 1
            if tokens[i] != ",":
                raise ValueError("Separador esperado en CONCAT")
            i += 1
    raise ValueError(f"Token inesperado: {tok!r}")


# ── Puntos periodicos y metrica del shift ─────────────────────────

@dataclass(frozen=True)
class PeriodicPoint:
    """Sucesion biinfinita periodica generada por una palabra finita"""
    word: HierarchicalWord

    def __post_init__(self):
        if self.word.length == 0:
            raise ValueError("La palabra del periodo no puede ser vacia")

    @property
    def period(self) -> int:
        return self.word.length

    def symbol(self, i: int) -> int:
        # Coordenadas negativas por extension periodica
        return self.word.symbol_at(i % self.period)

    @cached_property
    def expanded(self) -> np.ndarray:
        return self.word.expand()

    def expand_range(self, start: int, stop: int) -> np.ndarray:
        """Simbolos en las posiciones start..stop-1"""
        return self.expanded[np.arange(start, stop) % self.period]


def as_periodic(word: Union[PeriodicPoint, WordLike]) -> PeriodicPoint:
    if isinstance(word, PeriodicPoint):
        return word
    if isinstance(word, HierarchicalWord):
        return PeriodicPoint(word)
    return PeriodicPoint(literal(word))


def window_for_delta(delta: float) -> int:
    """Menor entero w >= 0 con 2^-w < delta"""
    if delta <= 0:
        raise ValueError(f"delta debe ser positivo, recibido {delta}")
    w = 0
    while 2.0 ** -w >= delta:
        w += 1
    return w


def window_agree(u: PeriodicPoint, i: int, v: PeriodicPoint, j: int, m: int) -> bool:
    """
    Verdadero si sigma^i(u) y sigma^j(v) coinciden en las coordenadas -m..m

    Args:
        u, v: Puntos periodicos
        i, j: Fases (indices modulo el periodo)
        m: Ventana (>= 0)
    """
    if m < 0:
        raise ValueError(f"Ventana negativa: {m}")
    for offset in range(-m, m + 1):
        if u.symbol(i + offset) != v.symbol(j + offset):
            return False
    return True


def phased_equal(u: PeriodicPoint, i: int, v: PeriodicPoint, j: int) -> bool:
    """Igualdad de sigma^i(u) y sigma^j(v) como sucesiones biinfinitas"""
    # Dos sucesiones de periodos p y q que coinciden en p + q - gcd(p, q)
    # posiciones consecutivas son iguales
    p, q = u.period, v.period
    span = p + q - math.gcd(p, q)
    return bool(np.array_equal(u.expand_range(i, i + span), v.expand_range(j, j + span)))


def shift_distance(u: PeriodicPoint, i: int, v: PeriodicPoint, j: int,
                   cutoff: int = DEFAULT_CUTOFF) -> float:
    """
    Distancia 2^-m* con m* = min{|l| : las coordenadas difieren en l}

    Si hay acuerdo en -cutoff..cutoff devuelve 0 cuando las sucesiones son
    iguales y 2^-(cutoff+1) (cota superior) en otro caso.
    """
    for offset in range(cutoff + 1):
        if u.symbol(i + offset) != v.symbol(j + offset):
            return 2.0 ** -offset
        if u.symbol(i - offset) != v.symbol(j - offset):
            return 2.0 ** -offset
    if phased_equal(u, i, v, j):
        return 0.0
    return 2.0 ** -(cutoff + 1)
