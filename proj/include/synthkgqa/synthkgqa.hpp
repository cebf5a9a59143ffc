#pragma once

// Umbrella header. The cpp-httplib transport (http_httplib.hpp) is not
// included; link OpenSSL::SSL and include it explicitly when needed.

#include "synthkgqa/analysis.hpp"
#include "synthkgqa/config.hpp"
#include "synthkgqa/datapoint.hpp"
#include "synthkgqa/errors.hpp"
#include "synthkgqa/evalkit.hpp"
#include "synthkgqa/http.hpp"
#include "synthkgqa/ids.hpp"
#include "synthkgqa/kg.hpp"
#include "synthkgqa/llm.hpp"
#include "synthkgqa/pipeline.hpp"
#include "synthkgqa/prompts.hpp"
#include "synthkgqa/records.hpp"
#include "synthkgqa/sampling.hpp"
#include "synthkgqa/sparql.hpp"
#include "synthkgqa/sparql_eval.hpp"
#include "synthkgqa/sparql_remote.hpp"
#include "synthkgqa/split.hpp"
#include "synthkgqa/taxonomy.hpp"
