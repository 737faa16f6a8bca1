#ifndef SAMJPF_SAMJPF_HPP
#define SAMJPF_SAMJPF_HPP

#include "samjpf/collective.hpp"
#include "samjpf/config.hpp"
#include "samjpf/data_pipeline.hpp"
#include "samjpf/dbn_model.hpp"
#include "samjpf/detection.hpp"
#include "samjpf/gaussian.hpp"
#include "samjpf/gng.hpp"
#include "samjpf/mjpf.hpp"
#include "samjpf/scenario.hpp"
#include "samjpf/vocabulary.hpp"

#endif // SAMJPF_SAMJPF_HPP
