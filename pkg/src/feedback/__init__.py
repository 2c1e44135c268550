# CSV and SQL recording of run results.
