#pragma once

#include <actsom/activations.hpp>
#include <actsom/error.hpp>
#include <actsom/frequency_map.hpp>
#include <actsom/io.hpp>
#include <actsom/labels.hpp>
#include <actsom/manifest.hpp>
#include <actsom/measures.hpp>
#include <actsom/pipeline.hpp>
#include <actsom/png.hpp>
#include <actsom/report.hpp>
#include <actsom/som.hpp>
