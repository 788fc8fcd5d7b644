#!/usr/bin/env python3
"""Command-line stand-in for cvc5 built on its Python bindings.

Usage: cvc5-shim.py [--lang=smt2] [--produce-models] FILE

Runs every command of an SMT-LIB 2.6 file and prints the solver responses,
as the cvc5 executable would.
"""
import sys

import cvc5


def main(argv):
    files = [a for a in argv[1:] if not a.startswith("--")]
    if len(files) != 1:
        sys.stderr.write("usage: cvc5-shim.py [--lang=smt2] [--produce-models] FILE\n")
        return 2
    tm = cvc5.TermManager()
    solver = cvc5.Solver(tm)
    solver.setOption("produce-models", "true")
    symbols = cvc5.SymbolManager(tm)
    parser = cvc5.InputParser(solver, symbols)
    parser.setFileInput(cvc5.InputLanguage.SMT_LIB_2_6, files[0])
    while True:
        try:
            cmd = parser.nextCommand()
        except RuntimeError as e:
            sys.stdout.write('(error "%s")\n' % str(e).replace('"', "'"))
            sys.stdout.flush()
            return 1
        if cmd.isNull():
            break
        sys.stdout.write(cmd.invoke(solver, symbols))
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
