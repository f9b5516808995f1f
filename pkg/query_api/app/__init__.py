"""QueryAPI 서비스 패키지 초기화(QueryAPI service init)."""

