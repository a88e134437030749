# core: model parsing, incidence matrices, LCA solves, ingestion, scenarios, economics
