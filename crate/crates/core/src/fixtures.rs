//! Small grammars used by tests, benches and the command line examples.

use crate::rtg::{parse_grammar, Grammar};

fn load(text: &str) -> Grammar {
    parse_grammar(text).expect("fixture grammar parses")
}

/// `A0 → a(B0,B0) | c`, `B0 → b(A0)`.
pub fn g0() -> Grammar {
    load(
        "terminal a 2\nterminal b 1\nterminal c 0\n\
         rule A0 -> a(B0,B0)\nrule A0 -> c\nrule B0 -> b(A0)\n",
    )
}

/// `A1 → a(c,A1) | b(B1)`, `B1 → b(B1) | c`: not strongly connected.
pub fn g1() -> Grammar {
    load(
        "terminal a 2\nterminal b 1\nterminal c 0\n\
         rule A1 -> a(c,A1)\nrule A1 -> b(B1)\nrule B1 -> b(B1)\nrule B1 -> c\n",
    )
}

/// Two derivations of `a(c,c)` from `A`.
pub fn ambiguous() -> Grammar {
    load(
        "terminal a 2\nterminal c 0\n\
         rule A -> a(B,C)\nrule A -> a(D,E)\n\
         rule B -> c\nrule C -> c\nrule D -> c\nrule E -> c\n",
    )
}

/// `A → a(B) | c(C)`, `B → b(A)`, `C → e`. The nullary end marker is `e`
/// so that every terminal has a single rank.
pub fn periodic() -> Grammar {
    load(
        "terminal a 1\nterminal b 1\nterminal c 1\nterminal e 0\n\
         rule A -> a(B)\nrule B -> b(A)\nrule A -> c(C)\nrule C -> e\n",
    )
}

/// [`periodic`] plus a three-step loop through `A1`, `A2`.
pub fn periodic_extended() -> Grammar {
    load(
        "terminal a 1\nterminal b 1\nterminal c 1\nterminal e 0\n\
         rule A -> a(B)\nrule B -> b(A)\nrule A -> c(C)\nrule C -> e\n\
         rule A -> a(A1)\nrule A1 -> a(A2)\nrule A2 -> a(A)\n",
    )
}

/// `N → b(c) | a(N,N)`: needs one fresh nonterminal to become canonical.
pub fn split_example() -> Grammar {
    load("terminal a 2\nterminal b 1\nterminal c 0\nrule N -> b(c)\nrule N -> a(N,N)\n")
}

/// Unit rules and nested right-hand sides.
pub fn unit_example() -> Grammar {
    load(
        "terminal a 2\nterminal b 1\nterminal c 0\n\
         rule S -> T\nrule S -> b(a(S,c))\nrule T -> a(S,S)\nrule T -> c\n",
    )
}

/// `A → a(B,B)`, `B → b(A) | b(B) | c`.
pub fn typed_example() -> Grammar {
    load(
        "terminal a 2\nterminal b 1\nterminal c 0\n\
         rule A -> a(B,B)\nrule B -> b(A)\nrule B -> b(B)\nrule B -> c\n",
    )
}

/// `A → a(A) | c`: contexts of every size.
pub fn single_loop() -> Grammar {
    load("terminal a 1\nterminal c 0\nrule A -> a(A)\nrule A -> c\n")
}
