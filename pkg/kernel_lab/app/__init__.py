"""연산자 커널 실험실 패키지(Operator-kernel laboratory package)."""
