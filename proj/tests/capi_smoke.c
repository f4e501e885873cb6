/* The public header must compile as C. */
#include "etcon/etcon.h"

#include <stdio.h>
#include <string.h>

int main(void) {
    etcon_sim_options o;
    etcon_scenario* s = NULL;
    etcon_sim_options_init(&o);
    if (o.trials < 1) return 1;
    if (etcon_scenario_parse("{}", &s) != ETCON_ERR_SCHEMA) return 1;
    if (strlen(etcon_last_error()) == 0) return 1;
    printf("%s\n", etcon_version());
    return 0;
}
