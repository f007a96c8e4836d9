# Re-uploading classifier - single- and multi-qubit data re-uploading circuits
