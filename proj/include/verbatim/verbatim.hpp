#pragma once

// Everything at once. Individual headers can be included on their own.

#include "chunker.hpp"
#include "cli.hpp"
#include "config.hpp"
#include "embedding.hpp"
#include "extraction.hpp"
#include "index.hpp"
#include "index_store.hpp"
#include "io.hpp"
#include "llm.hpp"
#include "markdown.hpp"
#include "metrics.hpp"
#include "query_synth.hpp"
#include "retrieval.hpp"
#include "server.hpp"
