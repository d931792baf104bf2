#pragma once

#include "memloss/coupling.hpp"
#include "memloss/errors.hpp"
#include "memloss/io.hpp"
#include "memloss/maps.hpp"
#include "memloss/partitions.hpp"
#include "memloss/rng.hpp"
#include "memloss/sequences.hpp"
#include "memloss/tail_table.hpp"
#include "memloss/transfer.hpp"
